#pragma once

#include "core.hpp"
#include "elastic3d.hpp"
#include "errors.hpp"
#include "kernel.hpp"
#include "operator.hpp"
#include "profile1d.hpp"
#include "solver2d.hpp"
#include "stability.hpp"
#include "symbols.hpp"
