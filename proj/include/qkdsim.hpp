#pragma once

// Photon-level Monte Carlo simulator and analytics for a polarization
// encoded B92 quantum key distribution link.

#include "qkdsim/adversary.hpp"
#include "qkdsim/analytics.hpp"
#include "qkdsim/bitseq.hpp"
#include "qkdsim/config.hpp"
#include "qkdsim/errors.hpp"
#include "qkdsim/experiment.hpp"
#include "qkdsim/io.hpp"
#include "qkdsim/optics.hpp"
#include "qkdsim/protocol.hpp"
#include "qkdsim/reference_tables.hpp"
#include "qkdsim/rng.hpp"
#include "qkdsim/version.hpp"
