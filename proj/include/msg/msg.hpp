#pragma once

#include "msg/backprop.hpp"
#include "msg/chartsolver.hpp"
#include "msg/decoders.hpp"
#include "msg/energy.hpp"
#include "msg/error.hpp"
#include "msg/geometry.hpp"
#include "msg/graph.hpp"
#include "msg/io.hpp"
#include "msg/metrics.hpp"
#include "msg/model.hpp"
#include "msg/parallel.hpp"
#include "msg/random.hpp"
#include "msg/spiking.hpp"
#include "msg/synthetic.hpp"
#include "msg/training.hpp"
