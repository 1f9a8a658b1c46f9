import logging
import sys

LOG_FORMAT = "%(asctime)s.%(msecs)03d %(levelname)-5s [%(module)s] %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def setup_logging(iniconfig):
    """Configure the root logger from the [Logger] section: 2026-02-10 18:58:43.893 INFO  [module] msg"""
    section = iniconfig.config['Logger']
    level_name = section.get('level', 'info').upper()
    level = logging.getLevelName(level_name)
    if not isinstance(level, int):
        raise ValueError(f"[Logger] level '{level_name}' is not a logging level")

    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_qngwitness", False):
            root.removeHandler(handler)
            handler.close()
    root.setLevel(level)

    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)
    handlers = []
    if section.get('console', '1').strip() == '1':
        handlers.append(logging.StreamHandler(sys.stderr))
    if section.get('file', '').strip():
        handlers.append(logging.FileHandler(section['file'].strip(), encoding="utf-8"))
    for handler in handlers:
        handler._qngwitness = True
        handler.setFormatter(formatter)
        root.addHandler(handler)
    return root
