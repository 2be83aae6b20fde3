#pragma once

#include "eptest/errors.hpp"
#include "eptest/rng.hpp"
#include "eptest/distributions.hpp"
#include "eptest/regression_data.hpp"
#include "eptest/testing.hpp"
#include "eptest/eb_estimation.hpp"
#include "eptest/thresholding.hpp"
#include "eptest/coordinate_descent.hpp"
#include "eptest/truncated_normal.hpp"
#include "eptest/ess.hpp"
#include "eptest/gibbs.hpp"
#include "eptest/adaptive.hpp"
#include "eptest/simulation.hpp"
#include "eptest/csv_io.hpp"
#include "eptest/report.hpp"
