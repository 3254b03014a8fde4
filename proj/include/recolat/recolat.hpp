#pragma once

#include "recolat/asymptotics.hpp"
#include "recolat/continuous.hpp"
#include "recolat/error.hpp"
#include "recolat/forward.hpp"
#include "recolat/io.hpp"
#include "recolat/linear.hpp"
#include "recolat/lpp.hpp"
#include "recolat/measure.hpp"
#include "recolat/partition.hpp"
#include "recolat/rng.hpp"
