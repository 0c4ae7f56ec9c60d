/*
 * SPDX-FileCopyrightText: Copyright (c) 2026 the aalsim authors. All rights reserved.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <string>

#include "aalsim/sim.hpp"

namespace aalsim {

inline constexpr int kConfigSchemaVersion = 1;

/// Parses and validates a scenario config document. Unknown keys anywhere in
/// the document are errors; every diagnostic names the offending field path.
ScenarioConfig load_config_json(const std::string& json_text);
ScenarioConfig load_config_file(const std::string& path);

}  // namespace aalsim
