import pytest

import pupilkit as pk


@pytest.fixture(scope="session")
def params_hi():
    """Table defaults for 640x480 frames."""
    return pk.DetectionParams.for_resolution(640, 480)


@pytest.fixture(scope="session")
def params_lo():
    """Table defaults for 320x240 frames."""
    return pk.DetectionParams.for_resolution(320, 240)


@pytest.fixture(scope="session")
def subject_params():
    """640x480 params with area bounds bracketing the synthetic subject's
    observed hull band (the blur shifts hull areas ~140 px^2 below the
    planted ellipse area at k=23)."""
    return pk.params_with(
        pk.DetectionParams(), min_pupil_area=800.0, max_pupil_area=2200.0
    )


@pytest.fixture(scope="session")
def disc_frame():
    """640x480 synthetic eye, mid-range pupil, mild noise."""
    scene = pk.SynthScene(
        width=640, height=480, cx=321.0, cy=239.5, a=22.0, b=21.0,
        theta=0.4, noise_sigma=8.0, seed=11,
    )
    frame, truth = pk.render(scene)
    return frame, truth
