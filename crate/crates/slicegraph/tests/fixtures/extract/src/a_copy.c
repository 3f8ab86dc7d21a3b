#include <string.h>

void copy_name(char *src)
{
    char buf[16];
    int n = 0;
    n = strlen(src);
    strcpy(buf, src);
}
