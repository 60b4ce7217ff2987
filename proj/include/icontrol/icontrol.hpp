// Copyright 2026 The icontrol Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include "icontrol/config.hpp"
#include "icontrol/design.hpp"
#include "icontrol/experiments.hpp"
#include "icontrol/imaging.hpp"
#include "icontrol/lattice.hpp"
#include "icontrol/pulse_csv.hpp"
#include "icontrol/response.hpp"
#include "icontrol/rng.hpp"
#include "icontrol/su2.hpp"
#include "icontrol/svg.hpp"
#include "icontrol/targets.hpp"
