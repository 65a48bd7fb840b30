"""
Application constants to eliminate magic numbers and hardcoded values
"""


class HevcConstants:
    """HEVC Annex-B framing and SPS syntax constants"""
    START_CODE = b"\x00\x00\x01"
    EMULATION_PREVENTION_BYTE = 0x03
    NAL_HEADER_BYTES = 2

    NAL_TYPE_VPS = 32
    NAL_TYPE_SPS = 33
    NAL_TYPE_PPS = 34
    NAL_TYPE_AUD = 35
    NAL_TYPE_IDR_W_RADL = 19
    NAL_TYPE_TRAIL_R = 1

    MAX_SPS_ID = 15
    MAX_SHORT_TERM_REF_PIC_SETS = 64
    MAX_LONG_TERM_REF_PICS_SPS = 32
    MIN_BIT_DEPTH = 8
    MAX_BIT_DEPTH = 16
    EXTENDED_SAR = 255

    CHROMA_FORMATS = {0: "mono", 1: "420", 2: "422", 3: "444"}
    # (SubWidthC, SubHeightC): conformance window offsets are in chroma sample units
    CHROMA_SUBSAMPLING = {0: (1, 1), 1: (2, 2), 2: (2, 1), 3: (1, 1)}

    # ffmpeg-style pixel format stems per chroma format
    PIXEL_FORMAT_STEMS = {
        "mono": "gray",
        "420": "yuv420p",
        "422": "yuv422p",
        "444": "yuv444p",
    }
    FULL_RANGE_SUFFIX = "-full"

    CODEC_H265 = "h265"
    CODEC_H264 = "h264"


class TraceConstants:
    """Per-block trace format constants"""
    MIN_QP = 0
    MAX_QP = 51
    CU_SIZES = (8, 16, 32, 64)
    MAX_MVS_PER_BLOCK = 2
    MAX_MVS_P_FRAME = 1
    LIST_L0 = 0
    LIST_L1 = 1
    ENCODING = "utf-8"


class FeatureConstants:
    """Frame-level feature extraction constants"""
    # Area of the 4x4 unit used to weight PUs
    UNIT_AREA = 16
    HISTOGRAM_BINS = 360
    BIN_CENTER_OFFSET = 0.5

    # Normalization defaults (only the 80% global threshold is a published value)
    DEFAULT_MAX_FRAME_WIDTH = 3840
    DEFAULT_MAX_FRAME_RATE = 60.0
    DEFAULT_LOW_MOTION_TAU = 1.0
    DEFAULT_GLOBAL_THRESHOLD = 0.80

    # Relative tolerance for the cumulative-count threshold test
    THRESHOLD_RELATIVE_TOLERANCE = 1e-12
    # Resultant length below this fraction of the global count is degenerate
    DEGENERATE_RESULTANT_FRACTION = 1e-9


class PoolingConstants:
    """Frame to segment pooling constants"""
    STAT_MEAN = "mean"
    STAT_STD = "std"
    STAT_KURTOSIS = "kurtosis"
    STAT_MIN = "min"
    STAT_MAX = "max"
    STAT_MEDIAN = "median"
    STAT_IQR = "iqr"
    VALID_STATS = {STAT_MEAN, STAT_STD, STAT_KURTOSIS, STAT_MIN, STAT_MAX, STAT_MEDIAN, STAT_IQR}

    # (frame feature attribute, feature label, statistics) in canonical order
    POOLING_PLAN = (
        ("frame_size", "framesize", ("mean", "std", "kurtosis", "min", "max")),
        ("min_qp", "minQP", ("iqr",)),
        ("max_qp", "maxQP", ("std",)),
        ("avg_qp", "avgQP", ("mean", "std", "kurtosis", "min", "max")),
        ("avg_block_depth", "avgBlockDepth", ("median", "kurtosis")),
        ("skip_ratio", "skipBlksRatio", ("median", "kurtosis")),
        ("stddev_motion", "stdDevMotion", ("mean",)),
        ("avg_motion", "avgMotion", ("mean", "kurtosis")),
        ("avg_qp_lm", "avgQpLm", ("std",)),
        ("avg_qp_local_mv_dir", "avgQpLocalMvDir", ("mean", "max")),
    )

    EQM_KEYS = tuple(
        f"{stat}_{label}" for _, label, stats in POOLING_PLAN for stat in stats
    )
    FRAME_COUNT_KEY = "frame_count"

    META_RESOLUTION = "Resolution"
    META_FRAME_RATE = "FrameRate"
    META_CODEC = "Codec"
    META_PIXEL_FORMAT = "PixelFormat"
    META_BITRATE = "Bitrate"
    METADATA_KEYS = (META_RESOLUTION, META_FRAME_RATE, META_CODEC, META_PIXEL_FORMAT, META_BITRATE)
    CATEGORICAL_METADATA_KEYS = (META_CODEC, META_PIXEL_FORMAT)

    # Frozen CSV column order after the id columns
    FEATURE_COLUMNS = EQM_KEYS + (FRAME_COUNT_KEY,) + METADATA_KEYS

    VIDEO_ID_COLUMN = "video_id"
    SEGMENT_IDX_COLUMN = "segment_idx"
    VIDEO_LEVEL_SEGMENT_IDX = -1

    FLOAT_FORMAT = "%.9g"


class ForestConstants:
    """Random forest defaults"""
    DEFAULT_N_TREES = 300
    DEFAULT_MIN_SAMPLES_LEAF = 2
    DEFAULT_SEED = 0
    # Features per split default: ceil(n_features / MTRY_DIVISOR)
    MTRY_DIVISOR = 3
    MIN_TRAINING_ROWS = 2
    LEAF = -1
    UINT64_MASK = (1 << 64) - 1


class ModelConstants:
    """Two-stage model and model file constants"""
    MODEL_FILE_VERSION = 1
    MODEL_FILE_FORMAT = "eqm-model"
    MODEL_FILE_EXTENSION = ".eqm"

    BASE_OUTPUT_KEY = "base_output"
    BASE_QP_KEY = "mean_avgQP"
    MIN_TRAINING_ROWS = 10

    MIN_SCORE = 0.0
    MAX_SCORE = 100.0

    CODEC_DICTIONARY = {"h264": 0, "h265": 1}
    PIXEL_FORMATS = (
        "yuv420p",
        "yuv420p10le",
        "yuv420p12le",
        "yuv422p",
        "yuv422p10le",
        "yuv422p12le",
        "yuv444p",
        "yuv444p10le",
        "yuv444p12le",
        "gray",
        "gray10le",
        "gray12le",
    )
    UNKNOWN_CATEGORY_CODE = -1
    # full-range variants follow the limited-range names
    PIXEL_FORMAT_DICTIONARY = {
        name: code
        for code, name in enumerate(PIXEL_FORMATS + tuple(f"{stem}-full" for stem in PIXEL_FORMATS))
    }


class FusionConstants:
    """Subjective dataset fusion constants"""
    MIN_ANCHORS = 2
    LOW_R2_WARNING = 0.5
    MOS_MIN = 0.0
    MOS_MAX = 100.0


class EvaluationConstants:
    """Correlation and cross-validation constants"""
    MIN_SAMPLES = 3
    MIN_FOLDS = 2
    DEFAULT_FOLDS = 5
    DEFAULT_REPETITIONS = 1000


class SynthConstants:
    """Synthetic trace generator constants"""
    RESOLUTIONS = ((640, 360), (1280, 720), (1920, 1080))
    FRAME_RATES = (24.0, 30.0, 60.0)
    CTU_SIZE = 64
    DEFAULT_VIDEOS = 40
    DEFAULT_FRAMES = 30
    QP_RANGE = (22, 42)
    QP_JITTER = 3
    MOTION_RANGE = (0.0, 24.0)
    LOCAL_BLOCK_FRACTION = 0.2
    MV_NOISE = 1.5
    MOS_NOISE = 1.5
    PIXEL_PROXY_SPREAD = 4.0
    PIXEL_PROXY_NOISE = 0.5
    PIXEL_PROXY_COLUMN = "pixel_proxy"
    GOP_PATTERN = "PBB"
    TWO_MV_FRACTION = 0.3
    SKIP_PROBABILITY = 0.5
    SKIP_MOTION_SCALE = 4.0
    # quad-tree split probability per CU size
    SPLIT_PROBABILITY = {64: 0.4, 32: 0.3, 16: 0.2}

    # frame size model: bytes per pixel at QP 32, halved every 6 QP
    BYTES_PER_PIXEL = 0.02
    QP_SIZE_PIVOT = 32
    QP_HALVING_STEP = 6.0
    FRAME_TYPE_SIZE_FACTOR = {"I": 4.0, "P": 1.2, "B": 0.7}
    FRAME_TYPE_QP_OFFSET = {"I": -2, "P": 0, "B": 2}
    MOTION_SIZE_SCALE = 8.0
    SIZE_LOG_NOISE = 0.1
    MIN_FRAME_BYTES = 64

    # planted quality: INTERCEPT - QP_SLOPE*(meanQP - QP_REF) - MOTION_SLOPE*motion + BITRATE_GAIN*log10(kbps)
    MOS_INTERCEPT = 88.0
    MOS_QP_SLOPE = 2.0
    MOS_QP_REFERENCE = 22.0
    MOS_MOTION_SLOPE = 0.5
    MOS_BITRATE_GAIN = 4.0


class ConfigConstants:
    """Pipeline configuration constants"""
    CONFIG_VERSION = 1
    ENV_PREFIX = "EQM_"
    DEFAULT_LOG_LEVEL = "INFO"
    DEFAULT_THREADS = 1
    DEFAULT_PIXEL_FORMAT = "yuv420p"


class CliConstants:
    """Command line surface constants"""
    EXIT_OK = 0
    EXIT_ERROR = 1
    EXIT_USAGE = 2
    MANIFEST_SUFFIX = ".manifest.json"
    SCORE_COLUMN = "score"
    MOS_COLUMN = "mos"
    ANCHOR_SOURCE_COLUMN = "source_mos"
    ANCHOR_TARGET_COLUMN = "target_mos"
    SUBCOMMANDS = ("probe", "extract", "fuse", "train", "predict", "crossval", "eval", "synth", "rq", "importance")
