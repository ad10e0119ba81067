/**
 * @file anisokpp.hpp
 * @brief Umbrella header for the numerical library (the CLI lives in cli.hpp).
 */
#pragma once

#include "anisokpp/anisotropy.hpp"
#include "anisokpp/eigen.hpp"
#include "anisokpp/error.hpp"
#include "anisokpp/grid.hpp"
#include "anisokpp/io.hpp"
#include "anisokpp/monotone_solver.hpp"
#include "anisokpp/pde.hpp"
#include "anisokpp/rearrange.hpp"
#include "anisokpp/shooting.hpp"
#include "anisokpp/weight_opt.hpp"
