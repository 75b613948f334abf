#pragma once

#include "cavicrys/beam_optics.hpp"
#include "cavicrys/config.hpp"
#include "cavicrys/coupling.hpp"
#include "cavicrys/crystal.hpp"
#include "cavicrys/errors.hpp"
#include "cavicrys/output.hpp"
#include "cavicrys/selftest.hpp"
#include "cavicrys/spectroscopy.hpp"
#include "cavicrys/sweeps.hpp"
#include "cavicrys/units.hpp"
