#pragma once

#include "vsearch/core.hpp"
#include "vsearch/dataset_io.hpp"
#include "vsearch/greedy.hpp"
#include "vsearch/ibs.hpp"
#include "vsearch/image.hpp"
#include "vsearch/metrics.hpp"
#include "vsearch/pipeline.hpp"
#include "vsearch/preprocess.hpp"
#include "vsearch/similarity.hpp"
