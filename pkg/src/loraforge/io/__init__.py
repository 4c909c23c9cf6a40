from .lwt import lwt_read, lwt_write
from .images import read_image, write_pgm, write_ppm

__all__ = ["lwt_read", "lwt_write", "read_image", "write_pgm", "write_ppm"]
