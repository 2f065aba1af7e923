/// @file dre.hpp
/// @brief Umbrella header for the deep-research engine.

#pragma once

#include "dre/bm25.hpp"
#include "dre/config.hpp"
#include "dre/critic.hpp"
#include "dre/document_bank.hpp"
#include "dre/errors.hpp"
#include "dre/evaluator.hpp"
#include "dre/generator.hpp"
#include "dre/harness.hpp"
#include "dre/mock.hpp"
#include "dre/outline.hpp"
#include "dre/pipeline.hpp"
#include "dre/planner.hpp"
#include "dre/policy_bank.hpp"
#include "dre/prompts.hpp"
#include "dre/providers.hpp"
#include "dre/research_loop.hpp"
#include "dre/text.hpp"
#include "dre/types.hpp"
#include "dre/util.hpp"
#include "dre/writer.hpp"
