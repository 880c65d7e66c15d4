#pragma once

#include "mixerforge/attention/attention.hpp"
#include "mixerforge/costmodel/costmodel.hpp"
#include "mixerforge/costmodel/pareto.hpp"
#include "mixerforge/hybrid/checkpoint.hpp"
#include "mixerforge/hybrid/decoder.hpp"
#include "mixerforge/hybrid/model.hpp"
#include "mixerforge/mixers/chunked.hpp"
#include "mixerforge/mixers/equivalence.hpp"
#include "mixerforge/mixers/oracle.hpp"
#include "mixerforge/mixers/scan.hpp"
#include "mixerforge/numerics/autodiff.hpp"
#include "mixerforge/tasks/tasks.hpp"
#include "mixerforge/trainer/train.hpp"
