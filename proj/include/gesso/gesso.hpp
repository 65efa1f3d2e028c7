#pragma once
#include <gesso/error.hpp>
#include <gesso/dataset.hpp>
#include <gesso/model.hpp>
#include <gesso/screening.hpp>
#include <gesso/block_update.hpp>
#include <gesso/solver.hpp>
#include <gesso/parallel.hpp>
#include <gesso/tuning.hpp>
#include <gesso/simdata.hpp>
#include <gesso/io.hpp>
