# Tests package for gru-enhance
