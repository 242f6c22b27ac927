from xml.etree import ElementTree

from support import bundled

from mrrefine.params import PipelineParams
from mrrefine.pipeline import refine
from mrrefine.render import PALETTE, render_svg


def test_scene_only_render_is_valid_svg():
    scn, plan = bundled("shelf3")
    root = ElementTree.fromstring(render_svg(scn))
    assert root.get("version") == "1.1"


def test_render_is_deterministic_and_colors_robots():
    scn, plan = bundled("one_slot")
    sol = refine(scn, plan, PipelineParams(seed=0)).solution
    a = render_svg(scn, plan, sol, title="one slot")
    assert a == render_svg(scn, plan, sol, title="one slot")
    assert PALETTE[0] in a and PALETTE[1] in a
    ns = {"s": "http://www.w3.org/2000/svg"}
    root = ElementTree.fromstring(a)
    assert len(root.findall(".//s:polyline", ns)) == len(scn.robots)
