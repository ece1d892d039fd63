#pragma once

#include "rfg/classify.hpp"
#include "rfg/corpus.hpp"
#include "rfg/error.hpp"
#include "rfg/fusion.hpp"
#include "rfg/image.hpp"
#include "rfg/pipeline.hpp"
#include "rfg/regions.hpp"
#include "rfg/selection.hpp"
#include "rfg/texture.hpp"
