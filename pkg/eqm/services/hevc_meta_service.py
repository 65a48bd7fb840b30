"""
HEVC Annex-B metadata service

Splits byte streams into NAL units and decodes the sequence parameter set far
enough to reach VUI timing. Nothing past the SPS is entropy decoded.
"""
import logging
from typing import Optional

from ..constants import HevcConstants
from ..core.bitstream import BitReader, BitWriter, escape_payload, unescape_payload
from ..core.custom_exceptions import (
    BitstreamExhaustedError,
    InvalidDurationError,
    MalformedSpsError,
    MissingFrameRateError,
    NoSpsError,
    NoStartCodeError,
    TruncatedUnitError,
)
from ..schemas.hevc import ChromaFormat, Codec, MetadataFeatures, NalUnit, SpsInfo


logger = logging.getLogger(__name__)

_CHROMA_BY_IDC = {idc: ChromaFormat(name) for idc, name in HevcConstants.CHROMA_FORMATS.items()}
_IDC_BY_CHROMA = {chroma: idc for idc, chroma in _CHROMA_BY_IDC.items()}


def _find_start_codes(stream: bytes) -> list[tuple[int, int]]:
    """Return (zero_run_start, payload_start) for every start code in the stream."""
    positions = []
    search = 0
    while True:
        idx = stream.find(HevcConstants.START_CODE, search)
        if idx == -1:
            return positions
        zero_start = idx
        floor = positions[-1][1] if positions else 0
        while zero_start > floor and stream[zero_start - 1] == 0:
            zero_start -= 1
        positions.append((zero_start, idx + 3))
        search = idx + 3


def split_nal_units(stream: bytes) -> list[NalUnit]:
    """Split an Annex-B byte stream into NAL units in stream order.

    Zero bytes between two units belong to the start code of the following
    unit; zero bytes after the last unit are kept as its trailing zeros, so
    ``b"".join(u.to_annexb() for u in units)`` reproduces the input.
    """
    starts = _find_start_codes(stream)
    if not starts:
        raise NoStartCodeError("No Annex-B start code found in stream")
    if starts[0][0] > 0:
        # leading zero bytes were already folded into the first start code
        raise NoStartCodeError("Stream does not begin with a start code")

    units: list[NalUnit] = []
    for index, (zero_start, payload_start) in enumerate(starts):
        is_last = index + 1 == len(starts)
        end = len(stream) if is_last else starts[index + 1][0]
        region = stream[payload_start:end]
        trailing_zeros = 0
        if is_last:
            stripped = region.rstrip(b"\x00")
            trailing_zeros = len(region) - len(stripped)
            region = stripped
        if len(region) < HevcConstants.NAL_HEADER_BYTES:
            raise TruncatedUnitError(
                f"NAL unit at byte {payload_start} is shorter than its {HevcConstants.NAL_HEADER_BYTES}-byte header"
            )
        payload = unescape_payload(region)
        units.append(
            NalUnit(
                nal_type=(payload[0] >> 1) & 0x3F,
                payload=payload,
                prefix_zeros=payload_start - 1 - zero_start,
                trailing_zeros=trailing_zeros,
            )
        )
    return units


def _skip_profile_tier_level(reader: BitReader, max_sub_layers_minus1: int) -> None:
    # general_profile_space .. general_level_idc
    reader.skip_bits(2 + 1 + 5 + 32 + 4 + 43 + 1 + 8)
    profile_present = []
    level_present = []
    for _ in range(max_sub_layers_minus1):
        profile_present.append(reader.read_flag())
        level_present.append(reader.read_flag())
    if max_sub_layers_minus1 > 0:
        for _ in range(max_sub_layers_minus1, 8):
            reader.skip_bits(2)
    for i in range(max_sub_layers_minus1):
        if profile_present[i]:
            reader.skip_bits(88)
        if level_present[i]:
            reader.skip_bits(8)


def _skip_scaling_list_data(reader: BitReader) -> None:
    for size_id in range(4):
        step = 3 if size_id == 3 else 1
        for _ in range(0, 6, step):
            if not reader.read_flag():
                reader.read_ue()  # scaling_list_pred_matrix_id_delta
                continue
            coef_num = min(64, 1 << (4 + (size_id << 1)))
            if size_id > 1:
                reader.read_se()  # scaling_list_dc_coef_minus8
            for _ in range(coef_num):
                reader.read_se()


def _skip_st_ref_pic_set(reader: BitReader, idx: int, num_delta_pocs: list[int]) -> int:
    """Consume st_ref_pic_set(idx) and return its NumDeltaPocs."""
    inter_rps_pred = reader.read_flag() if idx != 0 else False
    if inter_rps_pred:
        reader.read_flag()  # delta_rps_sign
        reader.read_ue()  # abs_delta_rps_minus1
        ref_delta_pocs = num_delta_pocs[idx - 1]
        count = 0
        for _ in range(ref_delta_pocs + 1):
            used_by_curr_pic = reader.read_flag()
            use_delta = True if used_by_curr_pic else reader.read_flag()
            if used_by_curr_pic or use_delta:
                count += 1
        return count
    num_negative = reader.read_ue()
    num_positive = reader.read_ue()
    if num_negative + num_positive > 32:
        raise MalformedSpsError(f"st_ref_pic_set {idx} declares {num_negative + num_positive} pictures")
    for _ in range(num_negative + num_positive):
        reader.read_ue()  # delta_poc_sX_minus1
        reader.read_flag()  # used_by_curr_pic_sX_flag
    return num_negative + num_positive


def _parse_vui(reader: BitReader) -> dict:
    vui: dict = {}
    if reader.read_flag():  # aspect_ratio_info_present_flag
        if reader.read_bits(8) == HevcConstants.EXTENDED_SAR:
            reader.skip_bits(32)
    if reader.read_flag():  # overscan_info_present_flag
        reader.skip_bits(1)
    if reader.read_flag():  # video_signal_type_present_flag
        reader.skip_bits(3)  # video_format
        vui["full_range"] = reader.read_flag()
        if reader.read_flag():  # colour_description_present_flag
            vui["colour_primaries"] = reader.read_bits(8)
            vui["transfer_characteristics"] = reader.read_bits(8)
            vui["matrix_coeffs"] = reader.read_bits(8)
    if reader.read_flag():  # chroma_loc_info_present_flag
        reader.read_ue()
        reader.read_ue()
    reader.skip_bits(3)  # neutral_chroma_indication, field_seq, frame_field_info_present
    if reader.read_flag():  # default_display_window_flag
        for _ in range(4):
            reader.read_ue()
    if reader.read_flag():  # vui_timing_info_present_flag
        num_units_in_tick = reader.read_bits(32)
        time_scale = reader.read_bits(32)
        if num_units_in_tick == 0 or time_scale == 0:
            raise MalformedSpsError("VUI timing with zero num_units_in_tick or time_scale")
        vui["frame_rate"] = time_scale / num_units_in_tick
    return vui


def parse_sps(unit: NalUnit) -> SpsInfo:
    """Decode resolution, bit depth, chroma format and VUI timing from an SPS NAL unit."""
    if unit.nal_type != HevcConstants.NAL_TYPE_SPS:
        raise MalformedSpsError(f"NAL unit type {unit.nal_type} is not an SPS")
    reader = BitReader(unit.payload[HevcConstants.NAL_HEADER_BYTES:])
    try:
        reader.skip_bits(4)  # sps_video_parameter_set_id
        max_sub_layers_minus1 = reader.read_bits(3)
        if max_sub_layers_minus1 > 6:
            raise MalformedSpsError(f"sps_max_sub_layers_minus1 {max_sub_layers_minus1} out of range")
        reader.skip_bits(1)  # sps_temporal_id_nesting_flag
        _skip_profile_tier_level(reader, max_sub_layers_minus1)

        sps_id = reader.read_ue()
        if sps_id > HevcConstants.MAX_SPS_ID:
            raise MalformedSpsError(f"sps_seq_parameter_set_id {sps_id} out of range")
        chroma_format_idc = reader.read_ue()
        if chroma_format_idc not in _CHROMA_BY_IDC:
            raise MalformedSpsError(f"chroma_format_idc {chroma_format_idc} out of range")
        separate_colour_planes = chroma_format_idc == 3 and reader.read_flag()
        coded_width = reader.read_ue()
        coded_height = reader.read_ue()
        if coded_width == 0 or coded_height == 0:
            raise MalformedSpsError(f"Picture size {coded_width}x{coded_height} is empty")
        width, height = coded_width, coded_height
        if reader.read_flag():  # conformance_window_flag
            left, right, top, bottom = (reader.read_ue() for _ in range(4))
            array_type = 0 if separate_colour_planes else chroma_format_idc
            sub_width, sub_height = HevcConstants.CHROMA_SUBSAMPLING[array_type]
            width -= sub_width * (left + right)
            height -= sub_height * (top + bottom)
            if width <= 0 or height <= 0:
                raise MalformedSpsError(
                    f"Conformance window crops {coded_width}x{coded_height} to nothing"
                )
        bit_depth_luma = reader.read_ue() + 8
        bit_depth_chroma = reader.read_ue() + 8
        if bit_depth_luma > HevcConstants.MAX_BIT_DEPTH or bit_depth_chroma > HevcConstants.MAX_BIT_DEPTH:
            raise MalformedSpsError(f"Bit depth {bit_depth_luma}/{bit_depth_chroma} out of range")
        log2_max_poc_lsb = reader.read_ue() + 4
        if log2_max_poc_lsb > 16:
            raise MalformedSpsError(f"log2_max_pic_order_cnt_lsb {log2_max_poc_lsb} out of range")

        ordering_info_present = reader.read_flag()
        first = 0 if ordering_info_present else max_sub_layers_minus1
        for _ in range(first, max_sub_layers_minus1 + 1):
            reader.read_ue()  # sps_max_dec_pic_buffering_minus1
            reader.read_ue()  # sps_max_num_reorder_pics
            reader.read_ue()  # sps_max_latency_increase_plus1

        for _ in range(6):
            # coding/transform block sizes and transform hierarchy depths
            reader.read_ue()
        if reader.read_flag():  # scaling_list_enabled_flag
            if reader.read_flag():  # sps_scaling_list_data_present_flag
                _skip_scaling_list_data(reader)
        reader.skip_bits(2)  # amp_enabled_flag, sample_adaptive_offset_enabled_flag
        if reader.read_flag():  # pcm_enabled_flag
            reader.skip_bits(8)
            reader.read_ue()
            reader.read_ue()
            reader.skip_bits(1)

        num_short_term_ref_pic_sets = reader.read_ue()
        if num_short_term_ref_pic_sets > HevcConstants.MAX_SHORT_TERM_REF_PIC_SETS:
            raise MalformedSpsError(f"num_short_term_ref_pic_sets {num_short_term_ref_pic_sets} out of range")
        num_delta_pocs: list[int] = []
        for idx in range(num_short_term_ref_pic_sets):
            num_delta_pocs.append(_skip_st_ref_pic_set(reader, idx, num_delta_pocs))

        if reader.read_flag():  # long_term_ref_pics_present_flag
            num_long_term = reader.read_ue()
            if num_long_term > HevcConstants.MAX_LONG_TERM_REF_PICS_SPS:
                raise MalformedSpsError(f"num_long_term_ref_pics_sps {num_long_term} out of range")
            for _ in range(num_long_term):
                reader.skip_bits(log2_max_poc_lsb + 1)
        reader.skip_bits(2)  # sps_temporal_mvp_enabled_flag, strong_intra_smoothing_enabled_flag

        vui = _parse_vui(reader) if reader.read_flag() else {}
    except BitstreamExhaustedError as exc:
        raise MalformedSpsError(f"SPS bitstream exhausted: {exc.message}") from exc

    return SpsInfo(
        sps_id=sps_id,
        width_luma=width,
        height_luma=height,
        coded_width=coded_width,
        coded_height=coded_height,
        bit_depth_luma=bit_depth_luma,
        bit_depth_chroma=bit_depth_chroma,
        chroma_format=_CHROMA_BY_IDC[chroma_format_idc],
        **vui,
    )


def encode_sps(
    width: int,
    height: int,
    bit_depth_luma: int = 8,
    chroma_format: ChromaFormat = ChromaFormat.YUV420,
    frame_rate: Optional[tuple[int, int]] = None,
    full_range: Optional[bool] = None,
    colour_description: Optional[tuple[int, int, int]] = None,
    sps_id: int = 0,
    conformance_window: Optional[tuple[int, int, int, int]] = None,
) -> NalUnit:
    """Write a minimal conformant SPS NAL unit.

    ``frame_rate`` is (time_scale, num_units_in_tick); VUI is written only
    when timing, range or colour information is requested.
    ``conformance_window`` is (left, right, top, bottom) in chroma sample
    units; ``width`` and ``height`` are then the coded luma size.
    """
    writer = BitWriter()
    writer.write_bits(0, 4)  # sps_video_parameter_set_id
    writer.write_bits(0, 3)  # sps_max_sub_layers_minus1
    writer.write_flag(True)  # sps_temporal_id_nesting_flag
    # profile_tier_level: Main 10 profile, level 5.1
    writer.write_bits(0, 2)
    writer.write_bits(0, 1)
    writer.write_bits(2, 5)
    writer.write_bits(0x20000000, 32)
    writer.write_bits(0b1001, 4)
    writer.write_bits(0, 43)
    writer.write_bits(0, 1)
    writer.write_bits(153, 8)

    writer.write_ue(sps_id)
    writer.write_ue(_IDC_BY_CHROMA[chroma_format])
    if chroma_format == ChromaFormat.YUV444:
        writer.write_flag(False)
    writer.write_ue(width)
    writer.write_ue(height)
    writer.write_flag(conformance_window is not None)  # conformance_window_flag
    for offset in conformance_window or ():
        writer.write_ue(offset)
    writer.write_ue(bit_depth_luma - 8)
    writer.write_ue(bit_depth_luma - 8)
    writer.write_ue(4)  # log2_max_pic_order_cnt_lsb_minus4
    writer.write_flag(True)  # sps_sub_layer_ordering_info_present_flag
    writer.write_ue(4)
    writer.write_ue(2)
    writer.write_ue(0)
    for value in (0, 3, 0, 3, 2, 2):
        writer.write_ue(value)
    writer.write_flag(False)  # scaling_list_enabled_flag
    writer.write_flag(True)  # amp_enabled_flag
    writer.write_flag(True)  # sample_adaptive_offset_enabled_flag
    writer.write_flag(False)  # pcm_enabled_flag
    writer.write_ue(1)  # num_short_term_ref_pic_sets
    writer.write_ue(1)  # num_negative_pics
    writer.write_ue(0)  # num_positive_pics
    writer.write_ue(0)  # delta_poc_s0_minus1
    writer.write_flag(True)  # used_by_curr_pic_s0_flag
    writer.write_flag(False)  # long_term_ref_pics_present_flag
    writer.write_flag(True)  # sps_temporal_mvp_enabled_flag
    writer.write_flag(True)  # strong_intra_smoothing_enabled_flag

    write_vui = frame_rate is not None or full_range is not None or colour_description is not None
    writer.write_flag(write_vui)
    if write_vui:
        writer.write_flag(False)  # aspect_ratio_info_present_flag
        writer.write_flag(False)  # overscan_info_present_flag
        signal_type = full_range is not None or colour_description is not None
        writer.write_flag(signal_type)
        if signal_type:
            writer.write_bits(5, 3)  # video_format: unspecified
            writer.write_flag(bool(full_range))
            writer.write_flag(colour_description is not None)
            if colour_description is not None:
                for value in colour_description:
                    writer.write_bits(value, 8)
        writer.write_flag(False)  # chroma_loc_info_present_flag
        writer.write_bits(0, 3)
        writer.write_flag(False)  # default_display_window_flag
        writer.write_flag(frame_rate is not None)
        if frame_rate is not None:
            time_scale, num_units_in_tick = frame_rate
            writer.write_bits(num_units_in_tick, 32)
            writer.write_bits(time_scale, 32)
            writer.write_flag(False)  # vui_poc_proportional_to_timing_flag
            writer.write_flag(False)  # vui_hrd_parameters_present_flag
        writer.write_flag(False)  # bitstream_restriction_flag
    writer.write_flag(False)  # sps_extension_present_flag
    writer.write_trailing_bits()

    header = bytes([HevcConstants.NAL_TYPE_SPS << 1, 0x01])
    return NalUnit(nal_type=HevcConstants.NAL_TYPE_SPS, payload=header + writer.to_bytes(), prefix_zeros=3)


def probe_metadata(
    stream: bytes,
    duration: Optional[float] = None,
    frame_rate_override: Optional[float] = None,
    frame_count: Optional[int] = None,
) -> MetadataFeatures:
    """Video-level metadata features of an Annex-B stream.

    The first SPS is authoritative; a caller frame rate takes precedence over
    VUI timing. Without an explicit duration, ``frame_count`` frames at that
    rate define it.
    """
    sps_units = [unit for unit in split_nal_units(stream) if unit.nal_type == HevcConstants.NAL_TYPE_SPS]
    if not sps_units:
        raise NoSpsError("Stream contains no sequence parameter set")

    sps = parse_sps(sps_units[0])
    for other in sps_units[1:]:
        if other.payload != sps_units[0].payload and parse_sps(other) != sps:
            logger.warning("Stream carries disagreeing SPS units; using the first one")
            break

    if frame_rate_override is not None:
        if sps.frame_rate is not None and sps.frame_rate != frame_rate_override:
            logger.info("Frame rate override %.6g replaces VUI rate %.6g", frame_rate_override, sps.frame_rate)
        frame_rate = frame_rate_override
    elif sps.frame_rate is not None:
        frame_rate = sps.frame_rate
    else:
        raise MissingFrameRateError("SPS has no VUI timing and no frame rate override was given")

    if duration is None:
        if not frame_count:
            raise InvalidDurationError("Either a duration or a frame count is required")
        duration = frame_count / frame_rate
    if duration <= 0:
        raise InvalidDurationError(f"Duration {duration} is not positive")

    bitrate = 8 * len(stream) / duration / 1000
    return MetadataFeatures(
        resolution=sps.resolution,
        frame_rate=frame_rate,
        codec=Codec.H265,
        pixel_format=sps.pixel_format,
        bitrate=bitrate,
    )


def build_stream(sps: NalUnit, frame_sizes: list[int], idr_period: int = 0) -> bytes:
    """Annex-B stream of an SPS followed by one opaque slice unit per frame size.

    Used by the synthetic generator so that stream bitrate matches trace frame sizes.
    """
    parts = [sps.to_annexb()]
    for index, size in enumerate(frame_sizes):
        nal_type = (
            HevcConstants.NAL_TYPE_IDR_W_RADL
            if index == 0 or (idr_period and index % idr_period == 0)
            else HevcConstants.NAL_TYPE_TRAIL_R
        )
        body_length = max(size - len(HevcConstants.START_CODE) - HevcConstants.NAL_HEADER_BYTES, 1)
        payload = bytes([nal_type << 1, 0x01]) + bytes([0x80 | (index & 0x7F)]) * body_length
        parts.append(HevcConstants.START_CODE + escape_payload(payload))
    return b"".join(parts)
