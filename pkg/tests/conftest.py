
import pytest
from reportlab.lib.pagesizes import letter
from reportlab.pdfgen import canvas


def make_text_pdf(path, lines, compress=1):
    """Write a small single-page PDF whose text layer is the given lines."""
    c = canvas.Canvas(str(path), pagesize=letter, pageCompression=compress)
    y = 720
    for line in lines:
        c.drawString(72, y, line)
        y -= 16
    c.showPage()
    c.save()


def make_image_only_pdf(path):
    """Write a PDF containing only vector graphics, no text operators."""
    c = canvas.Canvas(str(path), pagesize=letter)
    c.rect(100, 100, 300, 300, fill=1)
    c.line(0, 0, 500, 500)
    c.showPage()
    c.save()


@pytest.fixture
def text_pdf(tmp_path):
    path = tmp_path / "fixture.pdf"
    make_text_pdf(path, ["GLEASON SCORE: 3+4=7"])
    return path
