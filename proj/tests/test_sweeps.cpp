#include <catch2/catch_amalgamated.hpp>
#include "cavicrys/cavicrys.hpp"
