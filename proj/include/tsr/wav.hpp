// include/tsr/wav.hpp

// Copyright 2026  TSR Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABILITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef TSR_WAV_HPP_
#define TSR_WAV_HPP_

#include <string>

#include "tsr/types.hpp"

namespace tsr {

// RIFF PCM 16-bit mono, little-endian. Anything else is rejected; there is
// deliberately no resampling, so a caller that expects a fixed corpus rate
// must check `sample_rate` itself.
AudioSignal read_wav(const std::string& path);

// Samples are scaled by 32767, rounded to nearest, and clipped to int16.
void write_wav(const std::string& path, const AudioSignal& signal);

}  // namespace tsr

#endif  // TSR_WAV_HPP_
