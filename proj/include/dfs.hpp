#pragma once

#include "dfs/civil_time.hpp"
#include "dfs/csv.hpp"
#include "dfs/datagen.hpp"
#include "dfs/dataprep.hpp"
#include "dfs/design_matrix.hpp"
#include "dfs/encoding.hpp"
#include "dfs/entityset.hpp"
#include "dfs/error.hpp"
#include "dfs/evaluation.hpp"
#include "dfs/feature_matrix.hpp"
#include "dfs/forest.hpp"
#include "dfs/pipeline.hpp"
#include "dfs/primitives.hpp"
#include "dfs/synthesis.hpp"
