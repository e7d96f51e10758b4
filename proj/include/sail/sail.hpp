#pragma once

#include "sail/activation.hpp"
#include "sail/backend.hpp"
#include "sail/cache.hpp"
#include "sail/chat.hpp"
#include "sail/common.hpp"
#include "sail/dataset.hpp"
#include "sail/density.hpp"
#include "sail/evaluation.hpp"
#include "sail/experiment.hpp"
#include "sail/gateway.hpp"
#include "sail/http_backend.hpp"
#include "sail/memory.hpp"
#include "sail/mock_backend.hpp"
#include "sail/retrieval.hpp"
#include "sail/schema.hpp"
#include "sail/solver.hpp"
#include "sail/templates.hpp"
