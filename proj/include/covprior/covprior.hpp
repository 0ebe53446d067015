#pragma once

#include "covprior/analysis.hpp"
#include "covprior/autodiff.hpp"
#include "covprior/birds.hpp"
#include "covprior/checks.hpp"
#include "covprior/concurrency.hpp"
#include "covprior/diagnostics.hpp"
#include "covprior/distributions.hpp"
#include "covprior/error.hpp"
#include "covprior/format.hpp"
#include "covprior/likelihood.hpp"
#include "covprior/matrix.hpp"
#include "covprior/priors.hpp"
#include "covprior/rng.hpp"
#include "covprior/samplers.hpp"
#include "covprior/simulation.hpp"
