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

#ifndef UMVC_ERROR_H_
#define UMVC_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace umvc {

enum class ErrorKind {
  kAudioTooShort,
  kConfigInvalid,
  kTooFewPoints,
  kDimensionMismatch,
  kUnknownClass,
  kPlanMismatch,
  kShapeError,
  kSeparationInfeasible,
  kEmptyReference,
  kZeroNorm,
  kProbeUnderfit,
  kNonFiniteLoss,
  kIo,
  kFormat,
};

// Process exit status buckets used by the command-line tool.
enum class ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kData = 3,
  kNumeric = 4,
};

std::string_view ErrorKindName(ErrorKind kind);
ExitCode ExitCodeFor(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace umvc

#endif  // UMVC_ERROR_H_
