#pragma once

// Umbrella header.

#include "lakejoin/ann.hpp"
#include "lakejoin/bench.hpp"
#include "lakejoin/config.hpp"
#include "lakejoin/contextualize.hpp"
#include "lakejoin/corpus.hpp"
#include "lakejoin/embed.hpp"
#include "lakejoin/embed_client.hpp"
#include "lakejoin/evalkit.hpp"
#include "lakejoin/oracle.hpp"
#include "lakejoin/sketch.hpp"
#include "lakejoin/trainprep.hpp"
#include "lakejoin/util.hpp"
