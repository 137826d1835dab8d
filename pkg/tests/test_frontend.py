import struct
from importlib import resources

import pytest
from hypothesis import given, settings, strategies as st

from ecpart.frontend.dwarf import DebugBundle, DwarfError, extract_debug_bundle
from ecpart.frontend.elf import ElfError, read_elf
from ecpart.frontend.mapfile import MapFileError, parse_map_file
from ecpart.frontend.rv32i import LiftError, decode, lift_module
from ecpart.ir.cfg import build_cfg
from ecpart.ir.parser import parse_module
from ecpart.ir.printer import print_module

FW = resources.files("ecpart") / "fixtures" / "firmware"
FUNCS = {"_start", "classify", "g", "level", "over_limit", "dispatch"}


@pytest.fixture(scope="module")
def raw():
    return (FW / "fw.elf").read_bytes()


@pytest.fixture(scope="module")
def image(raw):
    return read_elf(raw)


@pytest.fixture(scope="module")
def bundle(image):
    return extract_debug_bundle(image)


def _section_headers(data):
    shoff, = struct.unpack_from("<I", data, 0x20)
    shentsize, shnum, shstrndx = struct.unpack_from("<HHH", data, 0x2E)
    strhdr = shoff + shstrndx * shentsize
    str_off, = struct.unpack_from("<I", data, strhdr + 16)
    for i in range(shnum):
        hdr = shoff + i * shentsize
        name_off, sh_type = struct.unpack_from("<II", data, hdr)
        end = data.index(b"\0", str_off + name_off)
        yield data[str_off + name_off:end].decode(), hdr, sh_type, str_off


# -- ELF ----------------------------------------------------------------


def test_fixture_symbols(image):
    assert {s.name for s in image.functions()} == FUNCS
    assert {s.name for s in image.symbols if s.kind == "object"} == {"limit", "last_level"}
    assert image.section(".text").executable


@pytest.mark.parametrize("data,needle", [
    (b"", "bad magic"),
    (b"MZ\x90\x00" + bytes(100), "bad magic"),
    (b"\x7fELF" + bytes(10), "truncated ELF header"),
])
def test_rejects_non_elf(data, needle):
    with pytest.raises(ElfError, match=needle):
        read_elf(data)


@settings(max_examples=60)
@given(st.data())
def test_truncation_only_raises_elf_error(raw, data):
    cut = data.draw(st.integers(0, len(raw) - 1))
    try:
        read_elf(raw[:cut])
    except ElfError:
        pass


def test_unsupported_machine(raw):
    patched = bytearray(raw)
    struct.pack_into("<H", patched, 18, 3)  # x86
    with pytest.raises(ElfError, match="unsupported machine"):
        read_elf(bytes(patched))


def test_stripped_image_has_no_symbol_table(raw):
    patched = bytearray(raw)
    for name, hdr, sh_type, _ in _section_headers(raw):
        if sh_type == 2:  # SHT_SYMTAB -> SHT_PROGBITS
            struct.pack_into("<I", patched, hdr + 4, 1)
    with pytest.raises(ElfError, match="no symbol table"):
        read_elf(bytes(patched))


def test_image_without_debug_info(raw):
    patched = bytearray(raw)
    renamed = 0
    for name, hdr, _, str_off in _section_headers(raw):
        if name.startswith(".debug_"):
            name_off, = struct.unpack_from("<I", raw, hdr)
            patched[str_off + name_off:str_off + name_off + 7] = b".nodbg_"
            renamed += 1
    assert renamed
    img = read_elf(bytes(patched))
    with pytest.raises(DwarfError, match="no DWARF"):
        extract_debug_bundle(img)


# -- DWARF --------------------------------------------------------------


def test_signatures(bundle):
    g = bundle.function("g")
    assert [(p.name, p.type.kind, p.type.width, p.direction) for p in g.params] == \
        [("a", "uint", 16, "in"), ("b", "bool", 1, "in")]
    assert (g.ret.kind, g.ret.width) == ("uint", 8)
    classify = bundle.function("classify")
    pout = classify.params[1]
    assert pout.type.kind == "ptr" and pout.type.pointee.width == 8 and pout.direction == "inout"
    assert classify.ret is None
    assert bundle.function("_start").params == ()


def test_enum_values(bundle):
    (mode,) = bundle.enums
    assert mode.name == "mode"
    assert mode.constants == (("MODE_OFF", 0), ("MODE_LOW", 1), ("MODE_HIGH", 2))
    assert bundle.function("level").params[0].type == mode


def test_globals(bundle):
    assert {(g.name, g.type.width, g.init) for g in bundle.globals} == {("limit", 8, 0x40), ("last_level", 8, 0)}


def test_bundle_json_round_trip(bundle):
    text = bundle.to_json()
    again = DebugBundle.from_json(text)
    assert again == bundle
    assert again.to_json() == text


def test_bundle_version_checked(bundle):
    text = bundle.to_json().replace('"version": 1', '"version": 99')
    with pytest.raises(DwarfError, match="version"):
        DebugBundle.from_json(text)


# -- map files ----------------------------------------------------------


def test_fixture_map_edges():
    refs = parse_map_file((FW / "fw.map").read_text())
    assert refs.call_edges() == [("_start", "dispatch"), ("_start", "level"),
                                 ("dispatch", "g"), ("dispatch", "over_limit")]


GNU_MAP = """\
Memory Configuration

Linker script and memory map

.text           0x00010000       0x40
 .text          0x00010000       0x20 main.o
                0x00010000                main
 .text          0x00010020       0x20 f1.o
                0x00010020                f1

Cross Reference Table

Symbol                                            File
f1                                                f1.o
                                                  main.o
main                                              main.o
"""


def test_gnu_cross_reference_table():
    refs = parse_map_file(GNU_MAP)
    assert refs.call_edges() == [("main", "f1")]
    assert refs.symbol_addresses["f1"] == 0x10020


def test_map_without_cross_references():
    with pytest.raises(MapFileError, match="cross-reference table header missing"):
        parse_map_file(GNU_MAP.split("Cross Reference Table")[0])


def test_empty_cross_reference_table():
    refs = parse_map_file(GNU_MAP.split("Symbol ")[0])
    assert refs.call_edges() == []
    assert refs.symbol_addresses["main"] == 0x10000


# -- decoding and lifting -----------------------------------------------

# (word, expected text); the words are clang's encodings of the same text
DECODE_TABLE = [
    (0x00150513, "addi a0, a0, 1"),
    (0x123457b7, "lui a5, 0x12345"),
    (0x0ff57593, "andi a1, a0, 255"),
    (0x00153513, "sltiu a0, a0, 1"),
    (0x00855513, "srli a0, a0, 8"),
    (0x4035d593, "srai a1, a1, 3"),
    (0x00461613, "slli a2, a2, 4"),
    (0x40a58533, "sub a0, a1, a0"),
    (0x00a5b533, "sltu a0, a1, a0"),
    (0x40b55533, "sra a0, a0, a1"),
    (0x0005c503, "lbu a0, 0(a1)"),
    (0xffe51603, "lh a2, -2(a0)"),
    (0x00a58023, "sb a0, 0(a1)"),
    (0x00112623, "sw ra, 12(sp)"),
    (0x00b50463, "beq a0, a1, 8"),
    (0xfeb57ee3, "bgeu a0, a1, -4"),
    (0x010000ef, "jal ra, 16"),
    (0x00008067, "jalr zero, 0(ra)"),
    (0xfff54513, "xori a0, a0, -1"),
    (0x00000517, "auipc a0, 0x0"),
]


@pytest.mark.parametrize("word,text", DECODE_TABLE)
def test_decode(word, text):
    assert str(decode(word)) == text


def test_unsupported_opcode_names_address():
    with pytest.raises(LiftError, match="0x00000073 at 0x148"):
        decode(0x00000073, 0x148)


def test_lift_whole_image(image, bundle):
    lifted = lift_module(image, bundle)
    assert not lifted.errors
    assert {f.name for f in lifted.module.defined} == FUNCS
    again = parse_module(lifted.text)
    assert print_module(again) == print_module(lifted.module)


def test_lifted_inputs(image, bundle):
    from ecpart.ir.inputs import input_vars

    m = lift_module(image, bundle).module
    widths = {name: {v.name: v.type.width for v in input_vars(m, name)} for name in FUNCS}
    assert widths["g"] == {"a": 16, "b": 1}
    assert set(widths["over_limit"]) == {"x", "@limit"}
    assert set(widths["classify"]) == {"pin", "*pout"}


def test_conditional_branch_has_two_successors(image, bundle):
    g = lift_module(image, bundle, ["g"]).module.function("g")
    cfg = build_cfg(g)
    taken = {e.dst for e in cfg.edges if e.src == "entry"}
    assert taken == {"L1006c", "L10068"}
