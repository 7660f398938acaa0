#ifndef METHCP_METHCP_HPP
#define METHCP_METHCP_HPP

#include "methcp/beta_binomial.hpp"
#include "methcp/config.hpp"
#include "methcp/io.hpp"
#include "methcp/multiple_testing.hpp"
#include "methcp/numeric.hpp"
#include "methcp/paired_filter.hpp"
#include "methcp/paired_model.hpp"
#include "methcp/pipeline.hpp"
#include "methcp/regimes.hpp"
#include "methcp/resampling.hpp"
#include "methcp/simulator.hpp"
#include "methcp/single_filter.hpp"
#include "methcp/single_model.hpp"
#include "methcp/site_test.hpp"
#include "methcp/sojourn.hpp"

#endif  // METHCP_METHCP_HPP
