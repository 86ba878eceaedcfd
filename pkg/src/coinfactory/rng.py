"""Counter-based pseudo-random streams for reproducible parallel replication.

Generator choice (pinned): SplitMix64-style counter mode using the Stafford
"mix13" finalizer.  Output word j of a stream is

    u_j = mix13(key + (j + 1) * GOLDEN)   (mod 2^64)

and stream keys are themselves hashes of (seed, replication index, domain):

    key = mix13(mix13(mix13(seed) + rep * GOLDEN) + domain * LEAP)

Every (replication, domain) pair gets an independent stream by construction, so
replications can be partitioned across workers in any order without changing
any drawn value.  The compiled kernel implements the identical function on
C uint64 arithmetic; tests assert the two agree word-for-word.

Domains: 0 = coin inputs, 1 = uniform randomization.
"""

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
LEAP = 0xD1B54A32D192ED03

DOMAIN_COIN = 0
DOMAIN_UNIFORM = 1


def mix64(z: int) -> int:
    """Stafford mix13 finalizer of a 64-bit word."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, rep: int, domain: int) -> int:
    """Derive the 64-bit key of stream (seed, rep, domain)."""
    z = mix64(seed & MASK64)
    z = mix64((z + (rep * GOLDEN)) & MASK64)
    return mix64((z + (domain * LEAP)) & MASK64)


def stream_word(key: int, j: int) -> int:
    """Word j (0-based) of the stream with the given key."""
    return mix64((key + ((j + 1) * GOLDEN)) & MASK64)


class Stream:
    """Sequential view of one counter-based stream.

    `draws` counts the words consumed; position can be read back for
    with-the-same-prefix replays in tests.
    """

    __slots__ = ("key", "pos")

    def __init__(self, seed: int, rep: int = 0, domain: int = 0):
        self.key = stream_key(seed, rep, domain)
        self.pos = 0

    def next_u64(self) -> int:
        u = stream_word(self.key, self.pos)
        self.pos += 1
        return u

    def next_float(self) -> float:
        # 53-bit mantissa from the top bits, standard double in [0, 1)
        return (self.next_u64() >> 11) * (2.0 ** -53)
