#pragma once

#include "arloc/errors.hpp"
#include "arloc/extractor.hpp"
#include "arloc/fingerprint.hpp"
#include "arloc/geometry.hpp"
#include "arloc/io.hpp"
#include "arloc/map_model.hpp"
#include "arloc/pose.hpp"
#include "arloc/positioning.hpp"
#include "arloc/synth.hpp"
#include "arloc/types.hpp"
#include "arloc/vision.hpp"
