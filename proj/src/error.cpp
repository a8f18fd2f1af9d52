#include "octseg/error.hpp"

namespace octseg {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedHeader: return "MalformedHeader";
    case ErrorKind::UnsupportedMaxval: return "UnsupportedMaxval";
    case ErrorKind::TruncatedData: return "TruncatedData";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::EmptyManifest: return "EmptyManifest";
    case ErrorKind::BadRecord: return "BadRecord";
    case ErrorKind::PlacementFailure: return "PlacementFailure";
    case ErrorKind::ImageTooSmall: return "ImageTooSmall";
    case ErrorKind::EmptyField: return "EmptyField";
    case ErrorKind::DegeneratePath: return "DegeneratePath";
    case ErrorKind::NoLayerContrast: return "NoLayerContrast";
    case ErrorKind::SubgraphTooThin: return "SubgraphTooThin";
    case ErrorKind::OrderingViolation: return "OrderingViolation";
    case ErrorKind::TooLarge: return "TooLarge";
    case ErrorKind::WindowOutOfBounds: return "WindowOutOfBounds";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::OddDimension: return "OddDimension";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::NoRecordedGraph: return "NoRecordedGraph";
    case ErrorKind::StateShapeMismatch: return "StateShapeMismatch";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::ConfigMismatch: return "ConfigMismatch";
    case ErrorKind::EmptyList: return "EmptyList";
    case ErrorKind::TooFew: return "TooFew";
    case ErrorKind::UnknownKey: return "UnknownKey";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace octseg
