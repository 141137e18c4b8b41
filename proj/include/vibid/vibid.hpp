#pragma once

#include "vibid/bench.hpp"
#include "vibid/detect.hpp"
#include "vibid/error.hpp"
#include "vibid/footprint.hpp"
#include "vibid/io.hpp"
#include "vibid/matrix.hpp"
#include "vibid/model.hpp"
#include "vibid/oracle.hpp"
#include "vibid/parallel.hpp"
#include "vibid/qr.hpp"
#include "vibid/spectrum.hpp"
#include "vibid/sysid.hpp"
