// Copyright 2026 The regionmim Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace regionmim {

// Root of every error raised by the library. The CLI maps ConfigError to
// exit code 1 and everything else derived from Error to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define REGIONMIM_DEFINE_ERROR(Name) \
  class Name : public Error {        \
   public:                           \
    using Error::Error;              \
  }

REGIONMIM_DEFINE_ERROR(DimensionError);
REGIONMIM_DEFINE_ERROR(LabelError);
REGIONMIM_DEFINE_ERROR(ContractError);
REGIONMIM_DEFINE_ERROR(GeometryError);
REGIONMIM_DEFINE_ERROR(StrategyError);
REGIONMIM_DEFINE_ERROR(CapacityError);
REGIONMIM_DEFINE_ERROR(TrainingError);
REGIONMIM_DEFINE_ERROR(StratificationError);
REGIONMIM_DEFINE_ERROR(IngestionError);
REGIONMIM_DEFINE_ERROR(CheckpointError);
REGIONMIM_DEFINE_ERROR(ConfigError);

#undef REGIONMIM_DEFINE_ERROR

}  // namespace regionmim
