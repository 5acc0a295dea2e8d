/* Copyright 2026 The blochctl Authors. All Rights Reserved.
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at
    http://www.apache.org/licenses/LICENSE-2.0
Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include "bloch/core.hpp"
#include "bloch/expm.hpp"
#include "bloch/grape.hpp"
#include "bloch/optim.hpp"
#include "bloch/parallel.hpp"
#include "bloch/propagate.hpp"
#include "bloch/snr.hpp"
#include "bloch/synthesis.hpp"
