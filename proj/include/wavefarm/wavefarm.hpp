#pragma once

#include "wavefarm/constants.hpp"
#include "wavefarm/error.hpp"
#include "wavefarm/farm_dynamics.hpp"
#include "wavefarm/hydro_oracle.hpp"
#include "wavefarm/neural.hpp"
#include "wavefarm/optimizer.hpp"
#include "wavefarm/parallel.hpp"
#include "wavefarm/rng.hpp"
#include "wavefarm/special_functions.hpp"
#include "wavefarm/surrogate.hpp"
#include "wavefarm/wave_climate.hpp"
