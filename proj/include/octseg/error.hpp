#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace octseg {

enum class ErrorKind {
  // dataio
  MalformedHeader,
  UnsupportedMaxval,
  TruncatedData,
  IoFailure,
  BadMagic,
  VersionMismatch,
  NonFiniteValue,
  MissingFile,
  EmptyManifest,
  BadRecord,
  PlacementFailure,
  // retinagraph
  ImageTooSmall,
  EmptyField,
  DegeneratePath,
  NoLayerContrast,
  SubgraphTooThin,
  OrderingViolation,
  // samplekit
  TooLarge,
  WindowOutOfBounds,
  DimMismatch,
  // tensornet
  ShapeMismatch,
  OddDimension,
  InvalidConfig,
  NoRecordedGraph,
  // trainer
  StateShapeMismatch,
  EmptyDataset,
  ConfigMismatch,
  // metrics
  EmptyList,
  TooFew,
  // config
  UnknownKey,
  ParseError,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace octseg
