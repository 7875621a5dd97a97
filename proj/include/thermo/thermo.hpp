#ifndef THERMO_THERMO_HPP
#define THERMO_THERMO_HPP

// Everything at once.

#include "thermo/experiment.hpp"
#include "thermo/hmc.hpp"
#include "thermo/linalg.hpp"
#include "thermo/model.hpp"
#include "thermo/models/conjugate_gaussian.hpp"
#include "thermo/models/mixture.hpp"
#include "thermo/models/reduced_rank.hpp"
#include "thermo/models/two_layer_net.hpp"
#include "thermo/observables.hpp"
#include "thermo/quadrature.hpp"
#include "thermo/response.hpp"
#include "thermo/stats.hpp"
#include "thermo/sweep.hpp"
#include "thermo/validation.hpp"

#endif  // THERMO_THERMO_HPP
