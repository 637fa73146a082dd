#pragma once

#include "ngkit/abr.hpp"
#include "ngkit/bits.hpp"
#include "ngkit/capacity.hpp"
#include "ngkit/cell.hpp"
#include "ngkit/convcode.hpp"
#include "ngkit/crc16.hpp"
#include "ngkit/dci.hpp"
#include "ngkit/decoder.hpp"
#include "ngkit/emu.hpp"
#include "ngkit/fusion.hpp"
#include "ngkit/io.hpp"
#include "ngkit/pipeline.hpp"
#include "ngkit/rng.hpp"
#include "ngkit/searchspace.hpp"
#include "ngkit/sim.hpp"
#include "ngkit/tbs.hpp"
#include "ngkit/tracker.hpp"
