#pragma once

// Umbrella header for the whole library.

#include "mobres/csv.hpp"
#include "mobres/date.hpp"
#include "mobres/embed.hpp"
#include "mobres/hashing.hpp"
#include "mobres/indices.hpp"
#include "mobres/ingest.hpp"
#include "mobres/iso_codes.hpp"
#include "mobres/measures.hpp"
#include "mobres/pipeline.hpp"
#include "mobres/rankstats.hpp"
#include "mobres/report.hpp"
#include "mobres/spatial.hpp"
#include "mobres/stats.hpp"
#include "mobres/types.hpp"
