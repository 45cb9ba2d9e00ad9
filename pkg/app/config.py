"""
Configuration settings for the mCD influence maximization toolkit
"""
import os

# Solver settings
EPSILON_CARDINALITY = float(os.getenv("MCD_EPSILON_CARDINALITY", "0.1"))
EPSILON_KNAPSACK = float(os.getenv("MCD_EPSILON_KNAPSACK", "0.05"))
BRUTE_FORCE_LIMIT = int(os.getenv("MCD_BRUTE_LIMIT", "2000000"))  # max subsets enumerated

# Used for edges seen at solve time but never co-observed in training
TAU_FALLBACK = float(os.getenv("MCD_TAU_FALLBACK", "1.0"))

# Independent Cascade baseline
IC_EDGE_PROBABILITY = float(os.getenv("MCD_IC_PROB", "0.1"))
IC_SIMULATIONS = int(os.getenv("MCD_IC_SIMS", "10000"))
IC_CHUNK_SIZE = int(os.getenv("MCD_IC_CHUNK", "1000"))  # simulations per RNG substream
IC_SELECTION_SAMPLES = int(os.getenv("MCD_IC_SELECTION_SAMPLES", "200"))  # live-edge samples behind IC seed selection
RNG_ALGORITHM = "Philox4x64"

# Worker pool
DEFAULT_THREADS = int(os.getenv("MCD_THREADS", str(os.cpu_count() or 1)))

# Synthetic data defaults
GEN_USERS = int(os.getenv("MCD_GEN_USERS", "200"))
GEN_ATTACHMENT = int(os.getenv("MCD_GEN_EDGES", "3"))
GEN_ACTIONS = int(os.getenv("MCD_GEN_ACTIONS", "20"))
GEN_INITIATORS = int(os.getenv("MCD_GEN_INITIATORS", "3"))
GEN_REPEAT_RATE = float(os.getenv("MCD_GEN_REPEAT_RATE", "0.3"))
GEN_ADOPTION = float(os.getenv("MCD_GEN_ADOPT", "0.1"))
GEN_RECIPROCITY = float(os.getenv("MCD_GEN_RECIPROCITY", "0.5"))
GEN_MEAN_DELAY = float(os.getenv("MCD_GEN_MEAN_DELAY", "600"))  # seconds

# Bench defaults
BENCH_USERS = int(os.getenv("MCD_BENCH_USERS", "2000"))
BENCH_ACTIONS = int(os.getenv("MCD_BENCH_ACTIONS", "100"))
BENCH_KS = os.getenv("MCD_BENCH_KS", "10,25,50")
BENCH_EPSILON = float(os.getenv("MCD_BENCH_EPSILON", "0.01"))  # finer ladder than the solve default
TEST_FRACTION = float(os.getenv("MCD_TEST_FRACTION", "0.2"))

# Logging Settings
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
