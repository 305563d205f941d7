"""Package-wide defaults.

Every stochastic routine takes an explicit integer seed; nothing in the
package ever draws from an unseeded generator.
"""

DEFAULT_SEED = 101
DEFAULT_MC_REPS = 1_000_000

# Draws are produced in fixed-size chunks with substreams keyed by
# (seed, chunk index), so the stream depends only on (seed, n) and never
# on how the chunks are scheduled.
CHUNK_ROWS = 1 << 16
