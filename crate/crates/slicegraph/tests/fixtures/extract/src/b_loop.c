void fill(char *dst, const char *s, int len)
{
    int i;
    int total = len * 2;
    char tmp[64];
    for (i = 0; i < len; i++) {
        tmp[i] = s[i];
    }
    memcpy(dst, tmp, total);
    sprintf(dst, "%d", total);
}
