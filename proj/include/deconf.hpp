#pragma once

#include "deconf/design.hpp"
#include "deconf/errors.hpp"
#include "deconf/evaluation.hpp"
#include "deconf/experiment.hpp"
#include "deconf/generate.hpp"
#include "deconf/io.hpp"
#include "deconf/lasso.hpp"
#include "deconf/model.hpp"
#include "deconf/pca.hpp"
#include "deconf/plmm.hpp"
#include "deconf/random.hpp"
#include "deconf/scenario.hpp"
