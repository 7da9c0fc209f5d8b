"""
Markdown run summary rendered from a verdict document.
"""

from pathlib import Path

from jinja2 import Environment, FileSystemLoader, StrictUndefined

from app.schemas import VerdictDocument

template_dir = Path(__file__).parent.parent / "templates"
environment = Environment(
    loader=FileSystemLoader(str(template_dir)),
    undefined=StrictUndefined,
    trim_blocks=True,
    lstrip_blocks=True,
    keep_trailing_newline=True,
)


def render_summary(document: VerdictDocument) -> str:
    template = environment.get_template("summary.md.j2")
    return template.render(doc=document)
