#ifndef COPYOPT_COPYOPT_HPP
#define COPYOPT_COPYOPT_HPP

#include "copyopt/candidate.hpp"
#include "copyopt/config.hpp"
#include "copyopt/error.hpp"
#include "copyopt/io.hpp"
#include "copyopt/metrics_ab.hpp"
#include "copyopt/optimizer.hpp"
#include "copyopt/pipeline.hpp"
#include "copyopt/review.hpp"
#include "copyopt/simulator.hpp"
#include "copyopt/text_features.hpp"
#include "copyopt/vector_index.hpp"

#endif  // COPYOPT_COPYOPT_HPP
