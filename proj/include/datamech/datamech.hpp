#pragma once

// Umbrella header for the data-procurement mechanism engine.

#include "datamech/audit.hpp"
#include "datamech/canonical.hpp"
#include "datamech/dates.hpp"
#include "datamech/digest.hpp"
#include "datamech/errors.hpp"
#include "datamech/instance.hpp"
#include "datamech/io.hpp"
#include "datamech/mechanisms.hpp"
#include "datamech/quality.hpp"
#include "datamech/rng.hpp"
#include "datamech/strategy.hpp"
#include "datamech/text.hpp"
#include "datamech/types.hpp"
#include "datamech/valuation.hpp"
