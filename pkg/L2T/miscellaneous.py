import gettext
import locale
import os

__version__ = "0.1.0"

_language = locale.getlocale()[0]
translation = gettext.translation("l2t", os.path.join(os.path.dirname(__file__), "locale"),
                                  [_language] if _language else None, fallback=True)
i18n = translation.gettext
