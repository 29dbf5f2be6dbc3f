#pragma once

#include "mlfair/attributes.hpp"
#include "mlfair/coarsen.hpp"
#include "mlfair/config.hpp"
#include "mlfair/downstream.hpp"
#include "mlfair/embed.hpp"
#include "mlfair/error.hpp"
#include "mlfair/graph.hpp"
#include "mlfair/io.hpp"
#include "mlfair/metrics.hpp"
#include "mlfair/pipeline.hpp"
#include "mlfair/refine.hpp"
#include "mlfair/synthetic.hpp"
