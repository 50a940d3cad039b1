#include "floodlens/error.hpp"

namespace floodlens {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::FileNotFound: return "FileNotFound";
        case ErrorCode::DecodeError: return "DecodeError";
        case ErrorCode::ImageTooSmall: return "ImageTooSmall";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NotNormalized: return "NotNormalized";
        case ErrorCode::TooFewPoints: return "TooFewPoints";
        case ErrorCode::InvalidK: return "InvalidK";
        case ErrorCode::EmptyReference: return "EmptyReference";
        case ErrorCode::EmptyMask: return "EmptyMask";
        case ErrorCode::InvalidDropout: return "InvalidDropout";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::FormatError: return "FormatError";
        case ErrorCode::ShapeError: return "ShapeError";
        case ErrorCode::UnpairedImage: return "UnpairedImage";
        case ErrorCode::UnknownClassFolder: return "UnknownClassFolder";
        case ErrorCode::EmptyEvaluation: return "EmptyEvaluation";
    }
    return "Unknown";
}

}  // namespace floodlens
