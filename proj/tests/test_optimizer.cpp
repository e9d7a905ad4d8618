#include <doctest.h>

<<<<<<< SEARCH
#include <cmath>
#include <vector>

#include "softmil/gradcheck.hpp"
#include "softmil/optimizer.hpp"

using namespace softmil;
