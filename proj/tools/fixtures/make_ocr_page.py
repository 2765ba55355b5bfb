"""Renders the synthetic scanned page used by the OCR integration test."""
from pathlib import Path

from PIL import Image, ImageDraw, ImageFont

OUT = Path(__file__).resolve().parents[2] / "data" / "fixtures" / "ocr" / "scanned_page.png"

LINES = [
    "Pathology report",
    "Diagnosis: uterine carcinosarcoma",
    "PD-L1 CPS 41, mismatch repair proficient",
    "Treatment: pembrolizumab",
]


def main() -> None:
    font = ImageFont.load_default(size=36)
    img = Image.new("L", (1400, 60 + 70 * len(LINES)), color=255)
    draw = ImageDraw.Draw(img)
    for i, line in enumerate(LINES):
        draw.text((40, 30 + 70 * i), line, fill=0, font=font)
    OUT.parent.mkdir(parents=True, exist_ok=True)
    img.save(OUT, optimize=True)


if __name__ == "__main__":
    main()
