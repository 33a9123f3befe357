#pragma once

#include "entpost/rng.hpp"
#include "entpost/errors.hpp"
#include "entpost/epr.hpp"
#include "entpost/union_find.hpp"
#include "entpost/codebook.hpp"
#include "entpost/codebook_io.hpp"
#include "entpost/protocol.hpp"
#include "entpost/netsim.hpp"
#include "entpost/transcript_io.hpp"
#include "entpost/session.hpp"
#include "entpost/montecarlo.hpp"
