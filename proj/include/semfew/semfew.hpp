#pragma once

#include "semfew/alignment_net.hpp"
#include "semfew/checkpoint.hpp"
#include "semfew/clustering.hpp"
#include "semfew/config.hpp"
#include "semfew/episodic.hpp"
#include "semfew/errors.hpp"
#include "semfew/evaluation.hpp"
#include "semfew/experiments.hpp"
#include "semfew/feature_store.hpp"
#include "semfew/llm_client.hpp"
#include "semfew/random.hpp"
#include "semfew/semantic_evolution.hpp"
#include "semfew/synthetic.hpp"
#include "semfew/training.hpp"
