//
// Copyright 2026 The dpsyn Authors
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
//

// Umbrella header: the whole library.

#ifndef DPSYN_DPSYN_H_
#define DPSYN_DPSYN_H_

#include "dpsyn/attack_mia.h"
#include "dpsyn/common.h"
#include "dpsyn/dataset.h"
#include "dpsyn/eval_bio.h"
#include "dpsyn/eval_statistical.h"
#include "dpsyn/eval_utility.h"
#include "dpsyn/gan.h"
#include "dpsyn/harness.h"
#include "dpsyn/marginals.h"
#include "dpsyn/nn.h"
#include "dpsyn/pgm.h"
#include "dpsyn/privacy.h"
#include "dpsyn/privsyn.h"
#include "dpsyn/rng.h"
#include "dpsyn/rongauss.h"
#include "dpsyn/vae.h"

#endif  // DPSYN_DPSYN_H_
