#pragma once

#include "ftl/error.hpp"
#include "ftl/syntax.hpp"
#include "ftl/trace.hpp"
#include "ftl/semantics.hpp"
#include "ftl/transforms.hpp"
#include "ftl/fragments.hpp"
#include "ftl/sat.hpp"
#include "ftl/talc.hpp"
#include "ftl/tiling.hpp"
#include "ftl/proofcheck.hpp"
