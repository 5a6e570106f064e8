// Copyright 2026 The lpac-coverage Authors
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

#include "lpac/errors.hpp"
#include "lpac/rng.hpp"
#include "lpac/geometry.hpp"
#include "lpac/grid.hpp"
#include "lpac/tensor.hpp"
#include "lpac/world.hpp"
#include "lpac/voronoi.hpp"
#include "lpac/cvt.hpp"
#include "lpac/perception.hpp"
#include "lpac/gnn.hpp"
#include "lpac/action.hpp"
#include "lpac/io.hpp"
#include "lpac/harness.hpp"
