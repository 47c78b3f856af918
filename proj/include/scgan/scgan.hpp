#pragma once

// Everything except the SHA-256 manifest helpers, which need OpenSSL; include
// scgan/experiment.hpp (or scgan/manifest.hpp) for those.

#include "scgan/baselines.hpp"
#include "scgan/checkpoint.hpp"
#include "scgan/data.hpp"
#include "scgan/duality.hpp"
#include "scgan/eval.hpp"
#include "scgan/losses.hpp"
#include "scgan/model.hpp"
#include "scgan/numcore/grad_check.hpp"
#include "scgan/projection.hpp"
#include "scgan/trainer.hpp"
#include "scgan/transport.hpp"
