#ifndef FSE_FSE_HPP
#define FSE_FSE_HPP

/**
 * @file fse.hpp
 * @brief Umbrella header for the quasi-periodic torus solver.
 */

#include "fse/errors.hpp"
#include "fse/model.hpp"
#include "fse/harmonics.hpp"
#include "fse/parallel.hpp"
#include "fse/integrator.hpp"
#include "fse/shooting.hpp"
#include "fse/stability.hpp"
#include "fse/continuation.hpp"
#include "fse/oracle.hpp"
#include "fse/io.hpp"
#include "fse/config.hpp"
#include "fse/checks.hpp"

#endif
