"""Fixed thresholds taken from the data-collection studies this toolkit replays.

Every value here is used by at least one rule in the pipeline and is pinned
by a test; change them only through configuration, never in place.
"""

# Soft close: an auction ends once the scheduled close has passed and no bid
# arrived during this many seconds.
SOFT_CLOSE_WINDOW_SECONDS = 5 * 60

# A bidder is frivolous when their final bid is strictly below this fraction
# of the lowest winning bid.
FRIVOLOUS_FRACTION = 0.8

# Service ratings are published only with this many surveys ...
MIN_SURVEYS = 30
# ... collected over a rolling window of this many days.
RATING_WINDOW_DAYS = 90

# Competitive-intensity floors for the price-quote sample.
MIN_QUOTES_PER_PRODUCT = 7
MIN_PRODUCTS_PER_CATEGORY = 20

# Eight retail categories of the price-dispersion study.
RETAIL_CATEGORIES = (
    "Books",
    "Camcorder",
    "DVD",
    "DVD player",
    "PDA",
    "Printer",
    "Scanner",
    "Video games",
)
