#pragma once

#include "dwellcert/data.hpp"
#include "dwellcert/dwell.hpp"
#include "dwellcert/error.hpp"
#include "dwellcert/linalg.hpp"
#include "dwellcert/lmi.hpp"
#include "dwellcert/psi.hpp"
#include "dwellcert/sim.hpp"
