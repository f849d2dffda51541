#pragma once

#include "dicbound/channel.hpp"
#include "dicbound/distribution.hpp"
#include "dicbound/entropy.hpp"
#include "dicbound/gcs.hpp"
#include "dicbound/network.hpp"
#include "dicbound/prover.hpp"
#include "dicbound/recipe.hpp"
#include "dicbound/templates.hpp"
