#pragma once

#include "graphem/datagen.hpp"
#include "graphem/em.hpp"
#include "graphem/errors.hpp"
#include "graphem/geometry.hpp"
#include "graphem/graph.hpp"
#include "graphem/io.hpp"
#include "graphem/model.hpp"
#include "graphem/types.hpp"
