#pragma once

#include "lolrec/committee.hpp"
#include "lolrec/errors.hpp"
#include "lolrec/harness.hpp"
#include "lolrec/local_regression.hpp"
#include "lolrec/market_data.hpp"
#include "lolrec/metrics.hpp"
#include "lolrec/portfolio.hpp"
