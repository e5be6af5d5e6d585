#pragma once

#include "illusory/client.hpp"
#include "illusory/dataset.hpp"
#include "illusory/error.hpp"
#include "illusory/evaluation.hpp"
#include "illusory/filters.hpp"
#include "illusory/image.hpp"
#include "illusory/image_io.hpp"
#include "illusory/kernel.hpp"
#include "illusory/metrics.hpp"
#include "illusory/parallel.hpp"
#include "illusory/pipeline.hpp"
#include "illusory/prompts.hpp"
#include "illusory/synth.hpp"
