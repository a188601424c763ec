#pragma once

#include "intellipred/calibration.hpp"
#include "intellipred/corpus.hpp"
#include "intellipred/cpc2.hpp"
#include "intellipred/error.hpp"
#include "intellipred/interchange.hpp"
#include "intellipred/intrusive.hpp"
#include "intellipred/metrics.hpp"
#include "intellipred/nonintrusive.hpp"
#include "intellipred/signal.hpp"
#include "intellipred/wav.hpp"
#include "intellipred/weighting.hpp"
