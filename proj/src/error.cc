// Copyright (c) 2026 The umvc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "umvc/error.h"

namespace umvc {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kAudioTooShort: return "AudioTooShort";
    case ErrorKind::kConfigInvalid: return "ConfigInvalid";
    case ErrorKind::kTooFewPoints: return "TooFewPoints";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kUnknownClass: return "UnknownClass";
    case ErrorKind::kPlanMismatch: return "PlanMismatch";
    case ErrorKind::kShapeError: return "ShapeError";
    case ErrorKind::kSeparationInfeasible: return "SeparationInfeasible";
    case ErrorKind::kEmptyReference: return "EmptyReference";
    case ErrorKind::kZeroNorm: return "ZeroNorm";
    case ErrorKind::kProbeUnderfit: return "ProbeUnderfit";
    case ErrorKind::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::kIo: return "IoError";
    case ErrorKind::kFormat: return "FormatError";
  }
  return "Unknown";
}

ExitCode ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfigInvalid:
      return ExitCode::kConfig;
    case ErrorKind::kProbeUnderfit:
    case ErrorKind::kNonFiniteLoss:
    case ErrorKind::kSeparationInfeasible:
    case ErrorKind::kZeroNorm:
      return ExitCode::kNumeric;
    default:
      return ExitCode::kData;
  }
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + message),
      kind_(kind) {}

}  // namespace umvc
