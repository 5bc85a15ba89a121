from .base import *

# chatty numerics while iterating locally
LOGGING['loggers']['avsem']['level'] = os.environ.get('AVSM_LOG_LEVEL', 'DEBUG')
