#include <catch2/catch_amalgamated.hpp>
#include "cfr/cfr.hpp"
